"""Regenerate tests/golden/ from the fixed mock study used by the report tests.

Run only after an intentional change to scoring or report formatting, and
review the diff before keeping it.
"""

from __future__ import annotations

import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))

from conftest import GOLDEN_DIR, golden_settings  # noqa: E402

from graphtune.runner import run_study  # noqa: E402


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        run_study(golden_settings(tmp))
        GOLDEN_DIR.mkdir(exist_ok=True)
        for name in ("summary.csv", "running_max.csv"):
            shutil.copy(Path(tmp) / name, GOLDEN_DIR / name)
            print(f"wrote {GOLDEN_DIR / name}")


if __name__ == "__main__":
    main()
