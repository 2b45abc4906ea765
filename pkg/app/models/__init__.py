# Models package.
