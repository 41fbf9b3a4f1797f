"""Street-network path loss and shadowing generator for urban microcells."""
