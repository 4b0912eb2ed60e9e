import sys

from torus_spectra.cli import main

sys.exit(main())
