"""Conversion between Chinese numerals and integers.

Judgment texts write durations and statute numbers with Chinese numerals
(e.g. 三年六个月, 第二百六十四条); the extractor needs to read them and the
synthetic-corpus generator needs to write them back. Covers 0..9999, which
is ample for statute numbers and month counts.
"""

from __future__ import annotations

_DIGITS = {
    "零": 0, "一": 1, "二": 2, "两": 2, "三": 3, "四": 4,
    "五": 5, "六": 6, "七": 7, "八": 8, "九": 9,
}
_UNITS = {"十": 10, "百": 100, "千": 1000}
_DIGIT_CHARS = "零一二三四五六七八九"

NUMERAL_CHARS = "".join(_DIGITS) + "".join(_UNITS)


def numeral_to_int(text: str) -> int:
    """Parse a Chinese or Arabic numeral string into an int."""
    text = text.strip()
    if not text:
        raise ValueError("empty numeral")
    if text.isascii():
        if not text.isdigit():
            raise ValueError(f"not a numeral: {text!r}")
        return int(text)
    total = 0
    current = 0
    for ch in text:
        if ch in _DIGITS:
            if _DIGITS[ch] == 0:
                continue  # 零 only separates positions
            current = _DIGITS[ch]
        elif ch in _UNITS:
            unit = _UNITS[ch]
            if current == 0:
                current = 1  # leading 十 as in 十五
            total += current * unit
            current = 0
        else:
            raise ValueError(f"not a numeral: {text!r}")
    return total + current


def int_to_numeral(n: int) -> str:
    """Render 0..9999 as a Chinese numeral (e.g. 264 -> 二百六十四)."""
    if n < 0 or n > 9999:
        raise ValueError(f"out of range: {n}")
    if n == 0:
        return "零"
    units = ["", "十", "百", "千"]
    digits = str(n)
    length = len(digits)
    parts: list[str] = []
    pending_zero = False
    for i, ch in enumerate(digits):
        d = int(ch)
        pos = length - 1 - i
        if d == 0:
            if parts:
                pending_zero = True
            continue
        if pending_zero:
            parts.append("零")
            pending_zero = False
        # 10..19 read as 十X rather than 一十X
        if not (d == 1 and pos == 1 and not parts):
            parts.append(_DIGIT_CHARS[d])
        parts.append(units[pos])
    return "".join(parts)
