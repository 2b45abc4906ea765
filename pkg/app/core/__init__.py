# Core package.
