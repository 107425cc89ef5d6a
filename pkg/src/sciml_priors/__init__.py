"""Structure-preserving scientific machine learning toolkit."""
