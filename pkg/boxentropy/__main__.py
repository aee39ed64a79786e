import sys

from boxentropy.cli import main

sys.exit(main())
