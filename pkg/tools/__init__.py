"""Development utilities for DacLin."""
