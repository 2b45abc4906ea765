# API package.
