import sys

from toeplab.cli import main

sys.exit(main())
