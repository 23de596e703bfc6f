"""
pofsm: still-image action recognition in the predicted-flow + saliency domain.

Maps single images to a three-channel POF-SM representation (two predicted
optical-flow channels and a thresholded saliency channel) and transfer-trains
a compact convolutional classifier on it.
"""

__version__ = "1.0.0"
