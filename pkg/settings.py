# -*- coding: utf-8 -*-
"""
runtime settings for the flipdyn-g solvers and cli
everything is read once from the environment at import time
"""
from __future__ import annotations

import logging
import os
from pathlib import Path


# dynamic paths
SESSION_DIR = Path(os.getenv("SESSION_DIR", Path.cwd()))
OUTPUT_DIR = Path(os.getenv("OUTPUT_DIR", SESSION_DIR / "flipdyn_out"))
BUNDLED_SPECS_DIR = Path(__file__).resolve().parent / "specs"


# general settings
SOLVER_VERSION = "0.3.0"
DEBUG_MODE = os.getenv("DEBUG_MODE", "0") == "1"
LOG_LEVEL = os.getenv("FLIPDYN_LOG_LEVEL", "DEBUG" if DEBUG_MODE else "WARNING").upper()
MAX_WORKERS = max(1, int(os.getenv("FLIPDYN_MAX_WORKERS", "1")))   # 1 = solve cells in-line

# "printed" or "derived" closed forms for the dual-deter chain
DUAL_DETER_FORMULAS = os.getenv("FLIPDYN_DUAL_DETER_FORMULAS", "printed").strip().lower()


# tolerances
VALUE_TOL = 1e-9          # lp value agreement
SIMPLEX_TOL = 1e-12       # strategy rows after renormalization
VERIFY_TOL = 1e-8         # saddle inequalities on stored cells
CROSS_CHECK_TOL = 1e-8    # closed form vs lp
TIE_TOL = 1e-12           # branch thresholds this close go to the lp
SADDLE_TOL = 1e-6         # best-response gaps
POLICY_TOL = 1e-9         # policy rows handed to the simulator


# simulation defaults
DEFAULT_SAMPLES = 10_000
DEFAULT_SEED = 20240601


LOG_FORMAT = "%(asctime)s %(levelname)-7s %(name)s: %(message)s"


def configure_logging(level: str | None = None) -> None:
    """set up root logging once for cli runs"""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.WARNING),
        format=LOG_FORMAT,
        datefmt="%H:%M:%S",
    )
