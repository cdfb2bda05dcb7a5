import logging
import os
from datetime import datetime
from typing import Optional

LOG_FORMAT = '%(asctime)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s'


def setup_logger(log_dir: Optional[str] = None, level: str = "INFO") -> None:
    """Configure logging with a console handler and, optionally, a timestamped file handler"""

    handlers = [logging.StreamHandler()]  # stderr; stdout is reserved for reports
    log_file = None
    if log_dir:
        if not os.path.exists(log_dir):
            os.makedirs(log_dir)
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        log_file = os.path.join(log_dir, f"cbd_toolkit_{timestamp}.log")
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )

    if log_file:
        logging.info(f"Logging initialized. Log file: {log_file}")
    else:
        logging.debug("Logging initialized (console only)")


def log_system_details(system, context: str = "") -> str:
    """Log the structure of a system of random variables"""
    debug_info = f"\n=== {context} ===\n"
    debug_info += f"System: {system.name}\n"
    debug_info += f"Contents: {len(system.contents)}\n"
    for content in system.contents:
        debug_info += f"  {content.id}: outcomes {list(content.outcomes)}\n"
    debug_info += f"Contexts: {len(system.contexts)}\n"
    for ctx in system.contexts:
        debug_info += f"  {ctx.id}: {list(ctx.contents)} ({len(ctx.pmf.support)} tuples)\n"
    debug_info += f"Identity classes: {len(system.identity_classes)}\n"
    for members in system.identity_classes:
        debug_info += f"  {[str(v) for v in members]}\n"
    logging.debug(debug_info)
    return debug_info


def log_program_details(lp, context: str = "") -> str:
    """Log the shape of a linear program before it is solved"""
    debug_info = f"\n=== {context} ===\n"
    debug_info += f"Variables: {lp.num_vars} ({sum(1 for flag in lp.nonneg_mask if not flag)} free)\n"
    debug_info += f"Equality rows: {len(lp.equalities)}\n"
    debug_info += f"Inequality rows: {len(lp.inequalities)}\n"
    if lp.objective is not None:
        debug_info += f"Objective: {lp.direction.value}\n"
    else:
        debug_info += "Objective: none (feasibility)\n"
    logging.debug(debug_info)
    return debug_info
