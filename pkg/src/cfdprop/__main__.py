"""Runs the command-line interface, as `python -m cfdprop`."""
from . import main

if "__main__" == __name__:
    main.run()
