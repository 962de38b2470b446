"""Color-assisted robust LiDAR odometry and mapping."""

__version__ = "0.1.0"
