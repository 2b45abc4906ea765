# Training package.
