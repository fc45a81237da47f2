"""pdmrec - position-decoupled sequential recommendation with reordering contrastive learning."""

__version__ = "0.1.0"
