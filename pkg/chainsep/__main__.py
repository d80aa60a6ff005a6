import sys

from chainsep.cli import main

sys.exit(main())
