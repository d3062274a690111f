"""On-disk formats - volumes, checkpoints, config files and CSV reports."""

from bmdsnet.formats.volume_file import read_volume, write_volume, encode_volume, decode_volume
from bmdsnet.formats.checkpoint import Checkpoint, save_checkpoint, load_checkpoint, encode_checkpoint, decode_checkpoint
from bmdsnet.formats.config_file import (
    parse_config, parse_config_text, dump_config, dump_default_config, config_hash,
)
from bmdsnet.formats.report import REPORT_HEADER, write_report, write_table, read_table

__all__ = [
    "read_volume",
    "write_volume",
    "encode_volume",
    "decode_volume",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "encode_checkpoint",
    "decode_checkpoint",
    "parse_config",
    "parse_config_text",
    "dump_config",
    "dump_default_config",
    "config_hash",
    "REPORT_HEADER",
    "write_report",
    "write_table",
    "read_table",
]
