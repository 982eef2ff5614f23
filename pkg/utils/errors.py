"""
Các exception dùng chung cho toàn bộ package.
"""


class QMetricError(Exception):
    """Base class cho mọi lỗi của library"""


class InvalidParameterError(QMetricError, ValueError):
    """Tham số không hợp lệ (model spec, tol, C, epsilon, config...)"""


class LengthConstraintError(InvalidParameterError):
    """Vi phạm ràng buộc độ dài; message nêu rõ bất đẳng thức bị vi phạm"""


class DimensionMismatchError(InvalidParameterError):
    """Kích thước ma trận / vector không khớp"""


class ResourceBudgetError(QMetricError):
    """Vượt quá budget cấu hình (sphere size, |B_R|^4, số free words...)"""


class NotAmenableError(QMetricError):
    """Phép toán chỉ hợp lệ cho model được khai báo amenable"""


class InvariantViolation(QMetricError):
    """Một invariant hoặc ceiling đã khai báo bị bác bỏ bằng tính toán"""
