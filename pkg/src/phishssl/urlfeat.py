"""Lexical URL features computable from the URL string alone.

Only string- and list-based features are produced; page content, WHOIS,
DNS and traffic features need network access and are read from dataset
CSVs instead. Features without a defensible string-only definition
(``random_domain``, ``domain_in_brand``, ``brand_in_subdomain``,
``brand_in_path``, ``path_extension``, ``statistical_report``,
``nb_redirection``, ``nb_external_redirection``) are omitted.
"""

from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from urllib.parse import urlsplit

FEATURE_COLUMNS = (
    "url_length", "hostname_length",
    "nb_dots", "nb_hyphens", "nb_at", "nb_qm", "nb_and", "nb_or", "nb_eq",
    "nb_underscore", "nb_tilde", "nb_percent", "nb_slash", "nb_star", "nb_colon",
    "nb_comma", "nb_semicolon", "nb_dollar", "nb_space", "nb_www", "nb_com", "nb_dslash",
    "ip", "https_token", "punycode", "port",
    "tld_in_path", "tld_in_subdomain", "abnormal_subdomain", "nb_subdomains", "prefix_suffix",
    "http_in_path", "ratio_digits_url", "ratio_digits_host",
    "length_words_raw", "char_repeat",
    "shortest_words_raw", "shortest_word_host", "shortest_word_path",
    "longest_words_raw", "longest_word_host", "longest_word_path",
    "avg_words_raw", "avg_word_host", "avg_word_path",
    "phish_hints", "shortening_service", "suspicious_tld",
)  # fmt: skip

CHAR_COUNTS = {
    "nb_dots": ".", "nb_hyphens": "-", "nb_at": "@", "nb_qm": "?", "nb_and": "&",
    "nb_or": "|", "nb_eq": "=", "nb_underscore": "_", "nb_tilde": "~", "nb_percent": "%",
    "nb_slash": "/", "nb_star": "*", "nb_colon": ":", "nb_comma": ",", "nb_semicolon": ";",
    "nb_dollar": "$", "nb_space": " ",
}  # fmt: skip

_WORD = re.compile(r"[A-Za-z0-9]+")
_ABNORMAL_SUB = re.compile(r"^w+\d*$")


class UrlParseError(ValueError):
    pass


@dataclass(frozen=True)
class UrlParts:
    scheme: str
    hostname: str
    port: int | None
    path: str
    query: str


@dataclass(frozen=True)
class WordStats:
    count: int
    shortest: int
    longest: int
    average: float


def read_list(path: str | Path) -> frozenset[str]:
    """One entry per line; blank lines and ``#`` comments are ignored."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip().lower()
        if line:
            entries.add(line)
    return frozenset(entries)


def _bundled(name: str) -> frozenset[str]:
    with resources.as_file(resources.files("phishssl") / "lexicons" / name) as p:
        return read_list(p)


@dataclass(frozen=True)
class LexiconConfig:
    tld_list: frozenset[str] = field(default_factory=lambda: _bundled("tlds.txt"))
    shortener_list: frozenset[str] = field(default_factory=lambda: _bundled("shorteners.txt"))
    hint_list: frozenset[str] = field(default_factory=lambda: _bundled("hints.txt"))
    suspicious_tld_list: frozenset[str] = field(default_factory=lambda: _bundled("suspicious_tlds.txt"))
    brand_list: frozenset[str] = field(default_factory=lambda: _bundled("brands.txt"))

    def __post_init__(self) -> None:
        for name in ("tld_list", "shortener_list", "hint_list", "suspicious_tld_list", "brand_list"):
            entries = frozenset(getattr(self, name))
            if any(not e or e != e.lower() for e in entries):
                raise ValueError(f"{name} entries must be non-empty and lowercase")
            object.__setattr__(self, name, entries)

    @classmethod
    def from_dir(cls, directory: str | Path) -> "LexiconConfig":
        d = Path(directory)
        return cls(
            read_list(d / "tlds.txt"),
            read_list(d / "shorteners.txt"),
            read_list(d / "hints.txt"),
            read_list(d / "suspicious_tlds.txt"),
            read_list(d / "brands.txt") if (d / "brands.txt").exists() else frozenset(),
        )


def parse_url(url: str) -> UrlParts:
    url = url.strip()
    if not url:
        raise UrlParseError("empty URL")
    candidate = url if "://" in url else "http://" + url
    try:
        parts = urlsplit(candidate)
        port = parts.port
    except ValueError as err:
        raise UrlParseError(f"cannot parse {url!r}: {err}") from None
    host = (parts.hostname or "").lower()
    if not host:
        raise UrlParseError(f"no hostname in {url!r}")
    return UrlParts(parts.scheme.lower() or "http", host, port, parts.path, parts.query)


def tokenize_words(s: str) -> WordStats:
    words = _WORD.findall(s)
    if not words:
        return WordStats(0, 0, 0, 0.0)
    lengths = [len(w) for w in words]
    return WordStats(len(words), min(lengths), max(lengths), sum(lengths) / len(lengths))


def is_ip_host(hostname: str) -> bool:
    host = hostname.strip("[]")
    try:
        ipaddress.ip_address(host)
    except ValueError:
        return False
    return True


def public_suffix(hostname: str, tld_list: frozenset[str]) -> str:
    """Longest suffix of ``hostname`` found in ``tld_list`` ('' when none)."""
    labels = hostname.split(".")
    for i in range(1, len(labels)):
        suffix = ".".join(labels[i:])
        if suffix in tld_list:
            return suffix
    return ""


def split_host(hostname: str, tld_list: frozenset[str]) -> tuple[list[str], str, str]:
    """``(subdomain_labels, registrable_domain, suffix)``.

    Unknown suffixes fall back to treating the last label as the suffix.
    """
    labels = hostname.split(".")
    if is_ip_host(hostname) or len(labels) < 2:
        return [], hostname, ""
    suffix = public_suffix(hostname, tld_list) or labels[-1]
    n_suffix = suffix.count(".") + 1
    reg = ".".join(labels[-(n_suffix + 1) :])
    return labels[: -(n_suffix + 1)], reg, suffix


def longest_run(s: str) -> int:
    best = run = 0
    prev = None
    for ch in s:
        run = run + 1 if ch == prev else 1
        prev = ch
        best = max(best, run)
    return best


def extract_url_features(url: str, lex: LexiconConfig | None = None) -> dict[str, float]:
    """Feature map in :data:`FEATURE_COLUMNS` order.

    Character counts, ``char_repeat`` and ``ratio_digits_url`` use the URL as
    given. Word statistics use the hostname, the path plus query, and their
    union ("raw").
    """
    lex = lex or default_lexicon()
    parts = parse_url(url)
    url = url.strip()
    host = parts.hostname
    rest = parts.path + ("?" + parts.query if parts.query else "")
    subs, reg, suffix = split_host(host, lex.tld_list)
    ip = is_ip_host(host)

    raw_words = _WORD.findall(host) + _WORD.findall(rest)
    host_words = _WORD.findall(host)
    path_words = [w.lower() for w in _WORD.findall(rest)]
    raw, host_ws, path_ws = tokenize_words(" ".join(raw_words)), tokenize_words(host), tokenize_words(rest)

    f: dict[str, float] = {}
    f["url_length"] = len(url)
    f["hostname_length"] = len(host)
    for name, ch in CHAR_COUNTS.items():
        f[name] = url.count(ch)
    f["nb_www"] = sum("www" in w.lower() for w in raw_words)
    f["nb_com"] = sum(w.lower() == "com" for w in raw_words)
    scheme_end = url.find("://")
    f["nb_dslash"] = url.count("//") - (1 if scheme_end >= 0 else 0)
    f["ip"] = int(ip)
    f["https_token"] = int("https" in host)
    f["punycode"] = int(any(label.startswith("xn--") for label in host.split(".")))
    f["port"] = int(parts.port is not None)
    f["tld_in_path"] = int(any(w in lex.tld_list for w in path_words))
    f["tld_in_subdomain"] = int(any(s in lex.tld_list for s in subs))
    f["abnormal_subdomain"] = int(bool(subs) and subs[0] != "www" and bool(_ABNORMAL_SUB.match(subs[0])))
    f["nb_subdomains"] = len(subs)
    f["prefix_suffix"] = int(not ip and "-" in reg)
    f["http_in_path"] = int("http" in rest.lower())
    f["ratio_digits_url"] = sum(c.isdigit() for c in url) / len(url)
    f["ratio_digits_host"] = sum(c.isdigit() for c in host) / len(host)
    f["length_words_raw"] = raw.count
    f["char_repeat"] = longest_run(url)
    f["shortest_words_raw"] = raw.shortest
    f["shortest_word_host"] = host_ws.shortest
    f["shortest_word_path"] = path_ws.shortest
    f["longest_words_raw"] = raw.longest
    f["longest_word_host"] = host_ws.longest
    f["longest_word_path"] = path_ws.longest
    f["avg_words_raw"] = raw.average
    f["avg_word_host"] = host_ws.average
    f["avg_word_path"] = path_ws.average
    rest_lower = rest.lower()
    f["phish_hints"] = sum(rest_lower.count(h) for h in sorted(lex.hint_list))
    f["shortening_service"] = int(host in lex.shortener_list or reg in lex.shortener_list)
    f["suspicious_tld"] = int(not ip and suffix in lex.suspicious_tld_list)
    return {name: f[name] for name in FEATURE_COLUMNS}


_DEFAULT: LexiconConfig | None = None


def default_lexicon() -> LexiconConfig:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = LexiconConfig()
    return _DEFAULT
