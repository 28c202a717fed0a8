"""Random planar maps, labeled trees and their scaling limits."""

__version__ = "0.1.0"
