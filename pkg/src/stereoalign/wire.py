"""Minimal WebSocket (RFC 6455) framing over asyncio streams.

Just enough protocol for one browser or scripted client per connection:
HTTP upgrade handshake, unfragmented text frames, ping/pong, and close.
Server-to-client frames are unmasked, client-to-server frames are masked,
as the RFC requires.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib
import os
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class ConnectionClosed(ConnectionError):
    pass


def accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _GUID).encode()).digest()
    return base64.b64encode(digest).decode()


async def server_handshake(reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
    request = await reader.readuntil(b"\r\n\r\n")
    headers = {}
    for line in request.decode("latin1").split("\r\n")[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if key is None or "websocket" not in headers.get("upgrade", "").lower():
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        raise ConnectionClosed("not a websocket upgrade request")
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n"
    )
    writer.write(response.encode())
    await writer.drain()


async def client_handshake(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter, host: str, path: str = "/"
) -> None:
    key = base64.b64encode(os.urandom(16)).decode()
    request = (
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n"
    )
    writer.write(request.encode())
    await writer.drain()
    response = await reader.readuntil(b"\r\n\r\n")
    status = response.split(b"\r\n", 1)[0]
    if b"101" not in status:
        raise ConnectionClosed(f"handshake rejected: {status!r}")


def _encode_frame(opcode: int, payload: bytes, mask: bool) -> bytes:
    header = bytearray([0x80 | opcode])
    length = len(payload)
    mask_bit = 0x80 if mask else 0x00
    if length < 126:
        header.append(mask_bit | length)
    elif length < (1 << 16):
        header.append(mask_bit | 126)
        header.extend(struct.pack(">H", length))
    else:
        header.append(mask_bit | 127)
        header.extend(struct.pack(">Q", length))
    if mask:
        key = os.urandom(4)
        header.extend(key)
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return bytes(header) + payload


async def read_frame(reader: asyncio.StreamReader) -> tuple[int, bytes]:
    try:
        head = await reader.readexactly(2)
    except (asyncio.IncompleteReadError, ConnectionResetError) as exc:
        raise ConnectionClosed("peer went away") from exc
    opcode = head[0] & 0x0F
    if not head[0] & 0x80:
        raise ConnectionClosed("fragmented frames are not supported")
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = struct.unpack(">H", await reader.readexactly(2))[0]
    elif length == 127:
        length = struct.unpack(">Q", await reader.readexactly(8))[0]
    key = await reader.readexactly(4) if masked else b""
    payload = await reader.readexactly(length) if length else b""
    if masked:
        payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
    return opcode, payload


async def send_text(writer: asyncio.StreamWriter, text: str, mask: bool = False) -> None:
    writer.write(_encode_frame(OP_TEXT, text.encode(), mask))
    await writer.drain()


async def send_close(writer: asyncio.StreamWriter, mask: bool = False) -> None:
    writer.write(_encode_frame(OP_CLOSE, b"", mask))
    await writer.drain()


async def recv_text(
    reader: asyncio.StreamReader, writer: asyncio.StreamWriter, mask_replies: bool = False
) -> str | None:
    """Next text payload, transparently answering pings; None when closed."""
    while True:
        opcode, payload = await read_frame(reader)
        if opcode == OP_TEXT:
            return payload.decode()
        if opcode == OP_PING:
            writer.write(_encode_frame(OP_PONG, payload, mask_replies))
            await writer.drain()
            continue
        if opcode == OP_PONG:
            continue
        if opcode == OP_CLOSE:
            return None
        raise ConnectionClosed(f"unsupported opcode {opcode}")
