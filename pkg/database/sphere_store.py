"""
Module lưu trữ sphere E_k trên đĩa (cache dạng text, mỗi dòng một normal form)
Key là fingerprint của model + bán kính
"""

import os
import tempfile
from typing import List, Optional

from config.settings import CACHE_DIR, APP_VERSION
from groups.models import Form, GroupModel, NORMAL_FORM_VERSION
from utils.logger import get_logger

logger = get_logger(__name__)

HEADER_TAG = '# qmetric-sphere'


class SphereStore:
    def __init__(self, cache_dir: str = CACHE_DIR):
        """
        Khởi tạo sphere store

        Args:
            cache_dir: Thư mục chứa các file cache
        """
        self.cache_dir = cache_dir

    def path_for(self, model: GroupModel, k: int) -> str:
        return os.path.join(self.cache_dir, f"{model.fingerprint}_r{k:03d}.sphere")

    def save(self, model: GroupModel, k: int, forms: List[Form]) -> bool:
        """
        Ghi sphere xuống đĩa (atomic: ghi file tạm rồi rename)

        Args:
            model: Group model
            k: Bán kính
            forms: Normal forms đã sắp thứ tự

        Returns:
            True nếu thành công
        """
        try:
            os.makedirs(self.cache_dir, exist_ok=True)
            lines = [
                HEADER_TAG,
                f"version {NORMAL_FORM_VERSION} {APP_VERSION}",
                f"model {model.name}",
                f"fingerprint {model.fingerprint}",
                f"radius {k}",
                f"count {len(forms)}",
            ]
            lines.extend(model.encode_form(f) for f in forms)

            fd, tmp_path = tempfile.mkstemp(dir=self.cache_dir, suffix='.tmp')
            with os.fdopen(fd, 'w', encoding='utf-8') as fh:
                fh.write('\n'.join(lines) + '\n')
            os.replace(tmp_path, self.path_for(model, k))
            logger.debug(f"Cached |E_{k}| = {len(forms)} for {model.name}")
            return True

        except OSError as e:
            logger.warning(f"Could not write sphere cache for {model.name}, k={k}: {e}")
            return False

    def load(self, model: GroupModel, k: int) -> Optional[List[Form]]:
        """
        Đọc sphere từ cache

        Returns:
            List normal forms, hoặc None nếu không có / không hợp lệ
        """
        path = self.path_for(model, k)
        if not os.path.exists(path):
            return None

        try:
            with open(path, 'r', encoding='utf-8') as fh:
                lines = fh.read().splitlines()

            header = dict(line.split(' ', 1) for line in lines[1:6])
            if (lines[0] != HEADER_TAG
                    or header.get('fingerprint') != model.fingerprint
                    or int(header.get('version', '0').split()[0]) != NORMAL_FORM_VERSION
                    or int(header.get('radius', -1)) != k):
                logger.warning(f"Stale sphere cache {path}, ignoring")
                return None

            forms = [model.decode_form(line) for line in lines[6:]]
            if len(forms) != int(header['count']):
                logger.warning(f"Truncated sphere cache {path}, ignoring")
                return None

            return forms

        except (OSError, ValueError, KeyError, IndexError) as e:
            logger.warning(f"Could not read sphere cache {path}: {e}")
            return None

    def clear(self) -> int:
        """Xóa toàn bộ cache, trả về số file đã xóa"""
        if not os.path.isdir(self.cache_dir):
            return 0
        removed = 0
        for name in os.listdir(self.cache_dir):
            if name.endswith('.sphere'):
                os.remove(os.path.join(self.cache_dir, name))
                removed += 1
        logger.info(f"Removed {removed} sphere cache files from {self.cache_dir}")
        return removed
