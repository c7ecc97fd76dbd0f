"""Writers for tables, rasters and raw data dumps."""
