"""Joint objective, optimizer and the epoch loop."""
