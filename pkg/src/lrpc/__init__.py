"""Loss-resilient channel-wise progressive image coding toolkit."""
