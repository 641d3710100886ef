import sys

print("segmentation fault (core dumped)")
sys.exit(0)
