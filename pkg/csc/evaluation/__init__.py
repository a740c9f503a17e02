"""Speaker verification trials, ROC metrics and attention traces."""
