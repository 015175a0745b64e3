# Services package: logging and file persistence.
