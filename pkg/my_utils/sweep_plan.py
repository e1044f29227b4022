# aurora/my_utils/sweep_plan.py

import copy
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional, Tuple

from solver.errors import PlanError
from solver.geometry import Domain, build_basis, grad_sup_constant

logger = logging.getLogger(__name__)

SWEEP_RULES = ("horizon", "cubic", "constant_alpha")

# (eps, delta) -> (E0 + eps^{1/2} R) / mu, 由成员自身的初始数据算出
BudgetFn = Callable[[float, float], float]


@dataclass(frozen=True)
class SweepMember:
    """扫描中的一个成员 (eps, alpha, N, delta) 及其单调量 q = (eps^2/alpha)^{1/C_N}。"""
    index: int
    eps: float
    alpha: float
    N: int
    delta: float
    C_N: float

    @property
    def q(self) -> float:
        return math.exp(math.log(self.eps ** 2 / self.alpha) / self.C_N)

    @property
    def member_id(self) -> str:
        return f"m{self.index:02d}"

    def to_dict(self) -> dict:
        row = asdict(self)
        row["q"] = self.q
        row["member_id"] = self.member_id
        return row


@dataclass(frozen=True)
class SweepPlan:
    members: Tuple[SweepMember, ...]
    rule: str
    axis: str = "eps_alpha_N"

    def __len__(self) -> int:
        return len(self.members)

    def member_configs(self, base_cfg: dict) -> List[dict]:
        """每个成员的完整运行配置 (深拷贝), output_dir 按成员编号区分。"""
        out = []
        for m in self.members:
            cfg = copy.deepcopy(base_cfg)
            cfg["physics"]["eps"] = m.eps
            cfg["physics"]["alpha"] = m.alpha
            cfg["physics"]["delta"] = m.delta
            cfg["galerkin"]["N"] = m.N
            cfg["initial_data"]["delta_data"] = m.delta
            cfg["output_dir"] = f"{base_cfg['output_dir']}/{self.axis}_{m.member_id}"
            out.append(cfg)
        return out


def _grad_constants(cfg: dict, Ns) -> dict:
    domain = Domain(**cfg["domain"])
    n = cfg["galerkin"]["n"]
    if max(Ns) > n:
        raise PlanError(f"扫描需要 N={max(Ns)} 个模态, 超过 Galerkin 维数 n={n}")
    basis = build_basis(domain, n)
    refine = cfg["geometry"]["grad_refine"]
    return {N: grad_sup_constant(basis, N, refine) for N in sorted(set(Ns))}


def _theta_shift(thetas, budgets, t_end: float, margin: float) -> float:
    """使每个成员都满足 theta_k - budget_k >= t_end + margin 的最小统一平移量。"""
    need = max(b + t_end + margin - th for th, b in zip(thetas, budgets))
    return max(0.0, need)


def build_members(cfg: dict, levels: int, rule: str,
                  budget: Optional[BudgetFn] = None) -> List[SweepMember]:
    """
    按规则生成成员, 不检查单调性。

    N_k = N0 + k, eps_k = 2^{-k} eps0; alpha_k 由规则决定:
        cubic           alpha_k = eps_k^3
        constant_alpha  alpha_k = physics.alpha
        horizon         alpha_k = eps_k^2 exp(-theta_k C_{N_k}), theta_k = theta0 + k * theta_step

    horizon 规则下 T^N_k = theta_k - budget_k。给出 budget 时 theta_k 整体上移,
    保证每个成员的 T^N 不小于 t_end + horizon_margin。
    """
    if rule not in SWEEP_RULES:
        raise PlanError(f"未知的扫描规则: {rule} (可选 {SWEEP_RULES})")
    if levels < 2:
        raise PlanError(f"扫描至少需要 2 层, 得到 levels={levels}")
    sw = cfg["sweep"]
    Ns = [sw["N0"] + k for k in range(levels)]
    if Ns[0] < 1:
        raise PlanError(f"N0 必须 >= 1, 得到 {sw['N0']}")
    C = _grad_constants(cfg, Ns)
    delta = cfg["physics"]["delta"]
    epss = [sw["eps0"] * 2.0 ** (-k) for k in range(levels)]
    thetas = [sw["theta0"] + k * sw["theta_step"] for k in range(levels)]
    if rule == "horizon" and budget is not None:
        budgets = [budget(eps, delta) for eps in epss]
        shift = _theta_shift(thetas, budgets, cfg["time"]["t_end"], sw["horizon_margin"])
        if shift > 0:
            logger.info("theta 整体上移 %.4g, 使各成员的 T^N >= t_end", shift)
        thetas = [th + shift for th in thetas]

    members = []
    for k, (N, eps, theta) in enumerate(zip(Ns, epss, thetas)):
        if rule == "cubic":
            alpha = eps ** 3
        elif rule == "constant_alpha":
            alpha = cfg["physics"]["alpha"]
        else:
            alpha = eps ** 2 * math.exp(-theta * C[N])
        if alpha <= 0:
            raise PlanError(f"成员 {k} 的 alpha={alpha} 必须为正")
        members.append(SweepMember(k, eps, alpha, N, delta, C[N]))
    return members


def check_monotone(members: List[SweepMember]) -> None:
    """(eps^2/alpha)^{1/C_N} 沿扫描严格递增, 否则报 PlanError。"""
    for prev, cur in zip(members, members[1:]):
        if not cur.q > prev.q:
            raise PlanError(
                f"扫描不满足单调性: 成员 {prev.member_id} 的 q={prev.q:.6g} "
                f">= 成员 {cur.member_id} 的 q={cur.q:.6g}"
            )


def make_sweep(cfg: dict, levels: int, rule: str = None,
               budget: Optional[BudgetFn] = None) -> SweepPlan:
    """
    生成 (eps, alpha, N) 扫描并在执行前检查单调性。

    Args:
        cfg (dict): 完整运行配置。
        levels (int): 层数, 至少为 2。
        rule (str): 扫描规则, 缺省时取 cfg['sweep']['rule']。
        budget (callable): (eps, delta) -> (E0 + eps^{1/2} R)/mu, horizon 规则据此选 theta。

    Returns:
        SweepPlan: 通过检查的扫描计划。
    """
    rule = rule or cfg["sweep"]["rule"]
    members = build_members(cfg, levels, rule, budget)
    check_monotone(members)
    for m in members:
        logger.info("扫描成员 %s: eps=%.4g alpha=%.4g N=%d C_N=%.4g q=%.6g",
                    m.member_id, m.eps, m.alpha, m.N, m.C_N, m.q)
    return SweepPlan(tuple(members), rule)


def make_delta_sweep(cfg: dict, budget: Optional[BudgetFn] = None) -> SweepPlan:
    """
    delta -> 0 扫描: 固定 (eps, alpha, N), delta 取 sweep.deltas。

    给出 budget 时 alpha 取配置值与
    eps^2 exp(-(max_k budget_k + t_end + horizon_margin) C_N) 中的较小者, 各成员都能推进到 t_end。
    """
    deltas = list(cfg["sweep"]["deltas"])
    if len(deltas) < 2:
        raise PlanError(f"delta 扫描至少需要 2 个值, 得到 {deltas}")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise PlanError(f"delta 序列必须严格递减: {deltas}")
    N = cfg["galerkin"]["N"]
    C = _grad_constants(cfg, [N])[N]
    eps, alpha = cfg["physics"]["eps"], cfg["physics"]["alpha"]
    if budget is not None:
        need = max(budget(eps, d) for d in deltas) + cfg["time"]["t_end"] + cfg["sweep"]["horizon_margin"]
        alpha = min(alpha, eps ** 2 * math.exp(-need * C))
        if alpha <= 0:
            raise PlanError(f"delta 扫描所需的 alpha 下溢为 0 (C_N={C:.4g}, 预算 {need:.4g})")
    members = tuple(SweepMember(k, eps, alpha, N, d, C) for k, d in enumerate(deltas))
    return SweepPlan(members, "delta", axis="delta")
