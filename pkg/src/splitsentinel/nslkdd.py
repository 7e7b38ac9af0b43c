"""NSL-KDD (KDDTrain+ / KDDTest+) loading and 122-dimensional encoding."""
from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from .errors import ParseError
from .schema import Dimension, FeatureMatrix, FeatureSchema

log = logging.getLogger(__name__)

COLUMNS = [
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes", "land",
    "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in", "num_compromised",
    "root_shell", "su_attempted", "num_root", "num_file_creations", "num_shells",
    "num_access_files", "num_outbound_cmds", "is_host_login", "is_guest_login", "count",
    "srv_count", "serror_rate", "srv_serror_rate", "rerror_rate", "srv_rerror_rate",
    "same_srv_rate", "diff_srv_rate", "srv_diff_host_rate", "dst_host_count",
    "dst_host_srv_count", "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate", "dst_host_serror_rate",
    "dst_host_srv_serror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate",
]
BINARY = ["land", "logged_in", "is_host_login", "is_guest_login"]

# Category vocabularies of the published dataset. Fixed so the encoded width
# is always 122; values outside them encode as an all-zero block.
CATEGORIES = {
    "protocol_type": ["icmp", "tcp", "udp"],
    "service": [
        "IRC", "X11", "Z39_50", "aol", "auth", "bgp", "courier", "csnet_ns", "ctf", "daytime",
        "discard", "domain", "domain_u", "echo", "eco_i", "ecr_i", "efs", "exec", "finger",
        "ftp", "ftp_data", "gopher", "harvest", "hostnames", "http", "http_2784", "http_443",
        "http_8001", "imap4", "iso_tsap", "klogin", "kshell", "ldap", "link", "login", "mtp",
        "name", "netbios_dgm", "netbios_ns", "netbios_ssn", "netstat", "nnsp", "nntp",
        "ntp_u", "other", "pm_dump", "pop_2", "pop_3", "printer", "private", "red_i",
        "remote_job", "rje", "shell", "smtp", "sql_net", "ssh", "sunrpc", "supdup", "systat",
        "telnet", "tftp_u", "tim_i", "time", "urh_i", "urp_i", "uucp", "uucp_path", "vmnet",
        "whois",
    ],
    "flag": ["OTH", "REJ", "RSTO", "RSTOS0", "RSTR", "S0", "S1", "S2", "S3", "SF", "SH"],
}
CONTINUOUS = [c for c in COLUMNS if c not in CATEGORIES and c not in BINARY]
CLAMP = (-0.1, 1.1)


def build_schema() -> FeatureSchema:
    dims = [Dimension(c, "continuous") for c in CONTINUOUS]
    for cat, values in CATEGORIES.items():
        dims += [Dimension(f"{cat}={v}", "onehot", category=cat, value=v) for v in values]
    dims += [Dimension(c, "binary") for c in BINARY]
    return FeatureSchema(dims)


SCHEMA = build_schema()


def read_records(path) -> tuple[list[list[str]], list[str]]:
    """Rows of the 41 raw attributes plus their label strings."""
    path = Path(path)
    rows, labels = [], []
    with path.open(newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) not in (42, 43):
                raise ParseError(f"expected 43 fields, got {len(fields)}", path, lineno)
            fields = [f.strip() for f in fields]
            for c in CONTINUOUS + BINARY:
                value = fields[COLUMNS.index(c)]
                try:
                    float(value)
                except ValueError:
                    raise ParseError(f"non-numeric value {value!r} in column {c!r}", path, lineno) from None
            if len(fields) == 43:
                try:
                    int(fields[42])
                except ValueError:
                    raise ParseError(f"difficulty {fields[42]!r} is not an integer", path, lineno) from None
            rows.append(fields[:41])
            labels.append(fields[41].rstrip("."))
    return rows, labels


class Encoder:
    """Min-max scaling fit on training rows plus fixed one-hot blocks."""

    def __init__(self):
        self.minimum = None
        self.maximum = None
        self._cont_idx = [COLUMNS.index(c) for c in CONTINUOUS]
        self._bin_idx = [COLUMNS.index(c) for c in BINARY]

    def _numeric(self, rows):
        raw = np.array([[float(r[i]) for i in self._cont_idx] for r in rows], dtype=np.float64)
        return raw.reshape(len(rows), len(self._cont_idx))

    def fit(self, rows) -> "Encoder":
        raw = self._numeric(rows)
        self.minimum = raw.min(axis=0)
        self.maximum = raw.max(axis=0)
        return self

    def transform(self, rows, clamp: bool = True) -> np.ndarray:
        raw = self._numeric(rows)
        span = self.maximum - self.minimum
        scaled = np.where(span > 0, (raw - self.minimum) / np.where(span > 0, span, 1.0), 0.0)
        if clamp:
            scaled = np.clip(scaled, *CLAMP)
        blocks = [scaled]
        unseen = 0
        for cat, values in CATEGORIES.items():
            col = COLUMNS.index(cat)
            lookup = {v: i for i, v in enumerate(values)}
            block = np.zeros((len(rows), len(values)))
            for n, r in enumerate(rows):
                i = lookup.get(r[col])
                if i is None:
                    unseen += 1
                else:
                    block[n, i] = 1.0
            blocks.append(block)
        if unseen:
            log.warning("%d categorical values outside the known vocabulary encoded as zeros", unseen)
        blocks.append(np.array([[float(r[i]) for i in self._bin_idx] for r in rows]).reshape(len(rows), -1))
        return np.hstack(blocks)


def locate(path) -> tuple[Path, Path]:
    """Resolve a directory (or a KDDTrain+ file) into train and test file paths."""
    path = Path(path)
    if path.is_dir():
        for train_name, test_name in (("KDDTrain+.txt", "KDDTest+.txt"), ("KDDTrain+.csv", "KDDTest+.csv")):
            if (path / train_name).exists() and (path / test_name).exists():
                return path / train_name, path / test_name
        raise FileNotFoundError(f"no KDDTrain+/KDDTest+ pair in {path}")
    test = path.with_name(path.name.replace("Train", "Test"))
    if not test.exists():
        raise FileNotFoundError(f"test file {test} not found next to {path}")
    return path, test


def load_nslkdd(path, test_path=None) -> tuple[FeatureMatrix, FeatureMatrix, np.ndarray]:
    """Return ``(train_normal, test, test_labels)``.

    Training keeps only ``normal`` rows of KDDTrain+; scaling is fit on them.
    Test rows keep file order; labels are 0 for normal, 1 otherwise.
    """
    if test_path is None:
        train_path, test_path = locate(path)
    else:
        train_path = Path(path)
    train_rows, train_labels = read_records(train_path)
    normal = [r for r, lab in zip(train_rows, train_labels) if lab == "normal"]
    if not normal:
        raise ParseError("training file has no normal rows", train_path)
    test_rows, test_lab = read_records(test_path)

    enc = Encoder().fit(normal)
    train = FeatureMatrix(SCHEMA, enc.transform(normal, clamp=False))
    test = FeatureMatrix(SCHEMA, enc.transform(test_rows), row_keys=list(range(len(test_rows))))
    labels = np.array([0 if lab == "normal" else 1 for lab in test_lab], dtype=np.int8)
    return train, test, labels
