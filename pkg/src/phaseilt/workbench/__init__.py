"""Configuration, file formats, target generators and the command line tool."""
