# Segmental-RNN frame-semantic parser.
