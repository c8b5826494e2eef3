import sys

from mfirl.harness.cli import main

sys.exit(main())
