"""
Logging cho toàn bộ package: file log + console. Console đi qua tqdm.write
để log không làm vỡ progress bar của các scan.
"""

import logging
import os

from tqdm import tqdm

from config.settings import LOG_FILE, LOG_LEVEL

FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
BANNER_WIDTH = 60


class TqdmHandler(logging.StreamHandler):
    """Console handler ghi qua tqdm.write"""

    def emit(self, record):
        try:
            tqdm.write(self.format(record), file=self.stream)
            self.flush()
        except Exception:
            self.handleError(record)


def setup_logger(level: str = LOG_LEVEL, log_file: str = LOG_FILE) -> logging.Logger:
    """
    Thiết lập root logger (chỉ một lần)

    Args:
        level: Tên level (INFO, DEBUG, ...)
        log_file: File log; chuỗi rỗng thì chỉ log ra console

    Returns:
        Root logger
    """
    root_logger = logging.getLogger()
    if getattr(root_logger, '_qmetric_configured', False):
        return root_logger

    formatter = logging.Formatter(FORMAT, datefmt=DATE_FORMAT)

    if log_file:
        log_dir = os.path.dirname(log_file)
        try:
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(log_file, encoding='utf-8')
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)
        except OSError as e:
            # Thư mục log không ghi được: vẫn chạy với console
            print(f"Could not open log file {log_file}: {e}")

    console_handler = TqdmHandler()
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    root_logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    root_logger._qmetric_configured = True
    return root_logger


def get_logger(name: str) -> logging.Logger:
    """Lấy logger cho module cụ thể"""
    return logging.getLogger(name)


def log_banner(logger: logging.Logger, title: str):
    """Banner cho các phép tính dài"""
    logger.info("=" * BANNER_WIDTH)
    logger.info(title)
    logger.info("=" * BANNER_WIDTH)


# Khởi tạo logger khi import module
setup_logger()
