# Data package.
