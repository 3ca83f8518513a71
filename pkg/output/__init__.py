"""
Output package - deterministic writers for run artifacts
"""
from output.writers import FLOAT_FORMAT, format_value, voxel_rows, write_csv, write_json, write_vtk

__all__ = ["FLOAT_FORMAT", "format_value", "voxel_rows", "write_csv", "write_json", "write_vtk"]
