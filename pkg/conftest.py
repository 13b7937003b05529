import os
import sys

# Entry points import the package as ``src``; make that work without installation.
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
