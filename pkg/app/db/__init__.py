# Database package.
