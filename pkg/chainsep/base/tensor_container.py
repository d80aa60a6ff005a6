"""BSST tensor container.

Layout (little endian):
    4 bytes   magic b"BSST"
    uint32    dtype code (1=float32, 2=float64, 3=complex64, 4=complex128, 5=int64)
    uint32    rank
    uint64    one entry per dimension
    ...       row-major data
"""
import struct

import numpy as np

from chainsep.base.errors import CorruptHeader, IoFailure, UnsupportedFormat
from chainsep.seplogger.logger import logger

MAGIC = b"BSST"

DTYPE_CODES = {1: np.dtype('<f4'),
               2: np.dtype('<f8'),
               3: np.dtype('<c8'),
               4: np.dtype('<c16'),
               5: np.dtype('<i8')}
CODE_FOR_DTYPE = {dtype.newbyteorder('='): code for code, dtype in DTYPE_CODES.items()}


def write_tensor(path: str, tensor: np.ndarray) -> None:
    tensor = np.asarray(tensor)
    if tensor.dtype == np.bool_:
        tensor = tensor.astype(np.int64)
    native = tensor.dtype.newbyteorder('=')
    if native not in CODE_FOR_DTYPE:
        msg = "BSST cannot store dtype {}".format(tensor.dtype)
        logger.error(msg)
        raise UnsupportedFormat(msg)
    code = CODE_FOR_DTYPE[native]
    header = MAGIC + struct.pack('<II', code, tensor.ndim) + struct.pack('<' + 'Q' * tensor.ndim, *tensor.shape)
    payload = np.ascontiguousarray(tensor, dtype=DTYPE_CODES[code]).tobytes(order='C')
    try:
        with open(path, 'wb') as f:
            f.write(header)
            f.write(payload)
    except OSError as e:
        msg = "Cannot write tensor '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e


def read_tensor(path: str) -> np.ndarray:
    try:
        with open(path, 'rb') as f:
            content = f.read()
    except OSError as e:
        msg = "Cannot read tensor '{}': {}".format(path, e)
        logger.error(msg)
        raise IoFailure(msg) from e

    if len(content) < 12 or content[:4] != MAGIC:
        msg = "'{}' is not a BSST tensor file".format(path)
        logger.error(msg)
        raise CorruptHeader(msg)
    code, rank = struct.unpack('<II', content[4:12])
    if code not in DTYPE_CODES:
        msg = "Unknown BSST dtype code {} in '{}'".format(code, path)
        logger.error(msg)
        raise CorruptHeader(msg)
    dims_end = 12 + 8 * rank
    shape = struct.unpack('<' + 'Q' * rank, content[12:dims_end])
    dtype = DTYPE_CODES[code]
    expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
    if len(content) - dims_end != expected:
        msg = "BSST payload of '{}' has {} bytes, header announces {}".format(path, len(content) - dims_end,
                                                                             expected)
        logger.error(msg)
        raise CorruptHeader(msg)
    data = np.frombuffer(content, dtype=dtype, offset=dims_end).reshape(shape)
    return data.astype(dtype.newbyteorder('='), copy=True)
