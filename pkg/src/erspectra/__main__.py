import sys

from erspectra.cli import main

sys.exit(main())
