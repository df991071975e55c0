"""Dramatic-structure analysis of video ads.

Extracts low-level dynamics signals (audio amplitude, shot boundaries,
optical flow) from uncompressed video/audio, predicts climax timestamps
with unsupervised peak picking and a from-scratch LSTM, and predicts
evoked sentiment with a multi-task recurrent model over fused context
features.
"""

__version__ = "0.1.0"
