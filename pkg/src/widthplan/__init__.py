"""Width-based planning toolkit: IW searches, policy and sketch rules,
structural termination checks and serialized / sketch width."""

__version__ = "0.1.0"
