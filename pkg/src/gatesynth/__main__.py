import sys

from gatesynth.cli import main

sys.exit(main())
