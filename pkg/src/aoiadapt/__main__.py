import sys

from aoiadapt.cli import main

sys.exit(main())
