from groups.models import (
    GroupElement,
    GroupModel,
    make_model,
)
from groups.spheres import SphereIndex, BallIndex, sphere, ball_sizes, ball_index
from groups.geometry import four_point_delta, quadruple_defect, geodesic_split, growth_exponent

__all__ = [
    'GroupElement', 'GroupModel', 'make_model',
    'SphereIndex', 'BallIndex', 'sphere', 'ball_sizes', 'ball_index',
    'four_point_delta', 'quadruple_defect', 'geodesic_split', 'growth_exponent',
]
