# aurora/my_utils/snapshot_io.py

import csv
import json
import logging
import os
import struct
from dataclasses import dataclass
from typing import Dict, Iterable, List

import numpy as np

from solver.errors import SnapshotError
from solver.geometry import Domain

logger = logging.getLogger(__name__)

MAGIC = b"AURSNAP1"
DTYPE = "<f8"

# 每次快照写入的场及其边界标签
STATE_FIELDS = {
    "rho": "neumann0",
    "u1": "dirichlet0", "u2": "dirichlet0", "u3": "dirichlet0",
    "H1": "normal_x", "H2": "normal_y", "H3": "dirichlet0",
    "psi_re": "dirichlet0", "psi_im": "dirichlet0",
    "phi_x": "none", "phi_y": "none",
    "Y_x": "none", "Y_y": "none",
    "A": "neumann0", "a": "none",
}


@dataclass
class SnapshotRecord:
    domain: Domain
    field: str
    bc: str
    t: float
    values: np.ndarray


def write_record(fh, domain: Domain, field: str, bc: str, t: float, values: np.ndarray) -> None:
    """
    写入一条记录: 魔数, uint32 小端头长度, UTF-8 JSON 头, 行主序 float64 数据。
    """
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    header = json.dumps({
        "domain": domain.to_dict(),
        "field": field,
        "bc": bc,
        "t": float(t),
        "shape": list(arr.shape),
        "dtype": DTYPE,
    }).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<I", len(header)))
    fh.write(header)
    fh.write(arr.tobytes(order="C"))


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotError(f"快照文件被截断: 读取{what}时需要 {n} 字节, 只剩 {len(buf)} 字节")
    return buf


def read_records(path: str) -> List[SnapshotRecord]:
    """
    读取快照文件中的全部记录。

    Args:
        path (str): 快照文件路径。

    Returns:
        list: SnapshotRecord 列表, 按写入顺序排列。
    """
    if not os.path.exists(path):
        raise SnapshotError(f"快照文件不存在: {path}")
    records = []
    with open(path, "rb") as fh:
        while True:
            magic = fh.read(len(MAGIC))
            if not magic:
                break
            if magic != MAGIC:
                raise SnapshotError(f"快照文件 {path} 的魔数错误: {magic!r}")
            (hlen,) = struct.unpack("<I", _read_exact(fh, 4, "头长度"))
            try:
                header = json.loads(_read_exact(fh, hlen, "头").decode("utf-8"))
                domain = Domain(**header["domain"])
                shape = tuple(header["shape"])
                if header["dtype"] != DTYPE:
                    raise SnapshotError(f"不支持的数据类型: {header['dtype']}")
            except (ValueError, KeyError, TypeError) as e:
                raise SnapshotError(f"快照头无法解析: {e}") from e
            count = int(np.prod(shape))
            data = np.frombuffer(_read_exact(fh, 8 * count, "数据"), dtype=DTYPE).reshape(shape)
            records.append(SnapshotRecord(domain, header["field"], header["bc"], header["t"],
                                          data.copy()))
    logger.debug("从 %s 读取 %d 条快照记录", path, len(records))
    return records


def state_arrays(state) -> Dict[str, np.ndarray]:
    """把 SystemState 拆成 STATE_FIELDS 中的各个数组。"""
    u = state.u.values
    fs = state.flow
    return {
        "rho": state.rho.values,
        "u1": u[0], "u2": u[1], "u3": u[2],
        "H1": state.H.values[0], "H2": state.H.values[1], "H3": state.H.values[2],
        "psi_re": state.psi.values.real, "psi_im": state.psi.values.imag,
        "phi_x": fs.phi[..., 0], "phi_y": fs.phi[..., 1],
        "Y_x": fs.Y[..., 0], "Y_y": fs.Y[..., 1],
        "A": fs.A, "a": fs.a,
    }


class SnapshotWriter:
    """按时间追加写入系统状态快照。"""

    def __init__(self, path: str):
        self.path = path
        self.count = 0
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "wb"):
            pass

    def write_state(self, state) -> None:
        with open(self.path, "ab") as fh:
            for name, values in state_arrays(state).items():
                write_record(fh, state.domain, name, STATE_FIELDS[name], state.t, values)
        self.count += 1


def load_snapshot_series(path: str):
    """
    把快照文件整理为 (domain, times, {field: (K, X, Y) 数组})。
    每个场在每个时间恰好出现一次, 否则报 SnapshotError。
    """
    records = read_records(path)
    if not records:
        raise SnapshotError(f"快照文件为空: {path}")
    domain = records[0].domain
    series: Dict[str, Dict[float, np.ndarray]] = {}
    for rec in records:
        if rec.domain != domain:
            raise SnapshotError("快照文件中的网格不一致")
        if rec.values.shape != domain.shape:
            raise SnapshotError(f"场 {rec.field} 的形状 {rec.values.shape} 与网格 {domain.shape} 不一致")
        series.setdefault(rec.field, {})[rec.t] = rec.values
    times = sorted(series[records[0].field])
    out = {}
    for name, by_t in series.items():
        if sorted(by_t) != times:
            raise SnapshotError(f"场 {name} 的快照时间与其他场不一致")
        out[name] = np.stack([by_t[t] for t in times])
    return domain, np.array(times), out


def write_table(path: str, rows: Iterable[dict]) -> None:
    """写入带表头的 CSV, 列为全部行键的并集 (按首次出现顺序)。"""
    rows = list(rows)
    columns: List[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
