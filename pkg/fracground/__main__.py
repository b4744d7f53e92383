"""Allow running with: python -m fracground"""
from fracground.cli import main

main()
