"""meshanon.__main__ - Run the command line with python -m meshanon."""

from __future__ import annotations

import sys

from meshanon.cli import main

sys.exit(main())
