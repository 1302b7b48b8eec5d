
from typing import Sequence
import logging

logger = logging.getLogger("sparsity")


def log_sequence_preview(name: str, values: Sequence[float], max_items: int = 6):
    shown = ", ".join(f"{v:.6g}" for v in list(values)[:max_items])
    suffix = ", ..." if len(values) > max_items else ""
    logger.info(f"{name} ({len(values)} values): [{shown}{suffix}]")


def log_rows_preview(name: str, rows: Sequence[dict], max_rows: int = 3):
    logger.info(f"{name}: {len(rows)} rows. Preview:")
    for i, row in enumerate(rows[:max_rows]):
        logger.info(f"  row {i + 1}: {row}")
