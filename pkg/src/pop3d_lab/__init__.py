"""POP3D and its PPO-family baselines on small environments with known solutions."""

__version__ = "0.1.0"
