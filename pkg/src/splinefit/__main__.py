import sys

from splinefit.cli import main

sys.exit(main())
