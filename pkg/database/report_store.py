"""
Module lưu report của các command: JSON (luôn có, validate bằng jsonschema),
CSV cho kết quả dạng bảng, parquet (tùy chọn) cho pipeline vẽ đồ thị.
Không ghi timestamp: cùng RunConfig cho ra file giống hệt từng byte.
"""

import json
import os
import re
import tempfile
from typing import Dict, List, Optional

import jsonschema
import numpy as np
import pandas as pd

from config.settings import APP_VERSION, REPORT_DIR, SCHEMA_VERSION, WRITE_PARQUET
from utils.errors import InvalidParameterError
from utils.logger import get_logger

logger = get_logger(__name__)

SCHEMA_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                           'schemas', 'report.schema.json')


def _to_jsonable(value):
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if np.isnan(value) or np.isinf(value):
            return str(value)
        return value
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if value is None or isinstance(value, str):
        return value
    return str(value)


def load_schema(path: str = SCHEMA_PATH) -> Dict:
    with open(path, 'r', encoding='utf-8') as fh:
        return json.load(fh)


def build_report(command: str, config: Dict, rows: Optional[List[Dict]] = None,
                 summary: Optional[Dict] = None, falsified: bool = False) -> Dict:
    """
    Tạo report dict theo schema

    Args:
        command: Tên command
        config: RunConfig dạng dict
        rows: Kết quả dạng bảng
        summary: Kết quả tổng hợp
        falsified: True nếu một invariant / ceiling bị bác bỏ

    Returns:
        Report dict (đã chuyển sang kiểu JSON)
    """
    results = {}
    if rows is not None:
        results['rows'] = rows
    if summary is not None:
        results['summary'] = summary
    return _to_jsonable({
        'schema_version': SCHEMA_VERSION,
        'version': APP_VERSION,
        'command': command,
        'config': config,
        'results': results,
        'status': 'falsified' if falsified else 'ok',
    })


def validate_report(report: Dict, schema: Optional[Dict] = None):
    """Raise InvalidParameterError nếu report không khớp schema"""
    try:
        jsonschema.validate(instance=report, schema=schema or load_schema())
    except jsonschema.ValidationError as e:
        raise InvalidParameterError(f"report does not match schema: {e.message}")


def _slug(config: Dict) -> str:
    model = config.get('model') or 'none'
    text = re.sub(r'[^A-Za-z0-9]+', '-', str(model)).strip('-').lower()
    return text or 'none'


class ReportStore:
    def __init__(self, output_dir: str = REPORT_DIR, write_parquet: bool = WRITE_PARQUET):
        """
        Khởi tạo report store

        Args:
            output_dir: Thư mục output
            write_parquet: Ghi thêm parquet cho kết quả dạng bảng
        """
        self.output_dir = output_dir
        self.write_parquet = write_parquet

    def base_path(self, report: Dict) -> str:
        return os.path.join(self.output_dir, f"{report['command']}_{_slug(report['config'])}")

    def _atomic_write(self, path: str, text: str):
        fd, tmp_path = tempfile.mkstemp(dir=self.output_dir, suffix='.tmp')
        with os.fdopen(fd, 'w', encoding='utf-8') as fh:
            fh.write(text)
        os.replace(tmp_path, path)

    def save(self, report: Dict) -> Dict[str, str]:
        """
        Validate rồi ghi report

        Args:
            report: Report dict từ build_report

        Returns:
            Dict {format: path} các file đã ghi
        """
        validate_report(report)
        os.makedirs(self.output_dir, exist_ok=True)
        base = self.base_path(report)
        written = {}

        json_path = base + '.json'
        self._atomic_write(json_path, json.dumps(report, indent=2, sort_keys=True) + '\n')
        written['json'] = json_path

        rows = report['results'].get('rows')
        if rows:
            df = pd.DataFrame(rows)
            csv_path = base + '.csv'
            self._atomic_write(csv_path, df.to_csv(index=False, lineterminator='\n'))
            written['csv'] = csv_path
            if self.write_parquet:
                try:
                    parquet_path = base + '.parquet'
                    df.to_parquet(parquet_path, engine='pyarrow', index=False)
                    written['parquet'] = parquet_path
                except (ImportError, ValueError, OSError) as e:
                    logger.warning(f"Could not write parquet for {report['command']}: {e}")

        logger.info(f"Saved {report['command']} report: {', '.join(written.values())}")
        return written

    def load(self, path: str) -> Optional[Dict]:
        """
        Đọc và validate report JSON

        Returns:
            Report dict, hoặc None nếu không đọc được / không hợp lệ
        """
        try:
            with open(path, 'r', encoding='utf-8') as fh:
                report = json.load(fh)
            validate_report(report)
            return report
        except (OSError, json.JSONDecodeError, InvalidParameterError) as e:
            logger.warning(f"Could not load report {path}: {e}")
            return None

    def load_table(self, path: str) -> Optional[pd.DataFrame]:
        try:
            return pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            logger.warning(f"Could not load table {path}: {e}")
            return None
