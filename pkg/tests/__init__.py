# Test package.
