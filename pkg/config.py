# aurora/config.py
import copy
import json
import os
from pprint import pformat

from solver.errors import ConfigError

SCHEMA_VERSION = 1

# --- 场景选择 ---
SELECTED_SCENARIO = "HeatBump"

# --- 不同初始数据场景的具体配置 ---
SCENARIO_CONFIGS = {
    "ZeroState": {
        "module_name": "scenarios.zero_state",
    },
    "HeatBump": {
        "module_name": "scenarios.heat_bump",
        "rho_mean": 1.0,
        "rho_amp": 0.5,
        "H_amp": 0.1,
        "psi_amp": 0.0,
    },
    "VacuumDisk": {
        "module_name": "scenarios.vacuum_disk",
        "radius": 0.2,
        "rho_out": 1.0,
        "u_amp": 0.1,
        "H_amp": 0.05,
        "psi_amp": 0.5,
        "psi_width": 0.15,
    },
    "SwirlFlow": {
        "module_name": "scenarios.swirl_flow",
        "rho_mean": 1.0,
        "u_amp": 0.2,
        "u3_amp": 0.0,
        "H_amp": 0.1,
        "psi_amp": 0.3,
        "psi_wavenumber": 4.0,
        "noise": 0.0,
    },
}

# --- 默认运行配置 (JSON 配置文件在此基础上逐键覆盖) ---
DEFAULT_CONFIG = {
    "schema_version": SCHEMA_VERSION,
    "domain": {"Lx": 1.0, "Ly": 1.0, "nx": 32, "ny": 32},
    "galerkin": {"n": 6, "N": 2},
    "physics": {
        "a": 0.1, "gamma": 1.4, "delta": 1e-3, "beta": 8.0,
        "lam": 0.0, "mu": 1.0, "nu": 0.1, "eps": 1e-2,
        "alpha": 1e-12, "r": 1.5,
    },
    "interaction": {"v_lo": 0.5, "v_hi": 2.0, "g_max": 1.0, "s_hi": 4.0, "h_max": 1.0},
    "time": {
        "dt": 1e-3, "t_end": 0.05, "snapshot_every": 10,
        "horizon_guard": True, "wave_substeps": 2,
    },
    "continuity": {"c_adv": 0.25, "limiter": "upwind"},
    "flow": {"exit_tol": 1e-8, "rho_floor": 1e-8, "relabel_every": 200},
    "geometry": {"grad_refine": 4},
    "diagnostics": {"riesz_pad": 4, "tol_factor": 1e-3, "mass_tol": 1e-8},
    "initial_data": {
        "scenario": SELECTED_SCENARIO,
        "delta_data": 1e-3,
        "smooth_scale": 1.0,
        "params": {},
    },
    "sweep": {
        "levels": 3, "rule": "horizon", "eps0": 1e-2, "N0": 1,
        "theta0": 1.0, "theta_step": 0.5, "horizon_margin": 0.05,
        "deltas": [1e-2, 1e-3, 1e-4], "workers": 1,
    },
    "seed": 0,
    "output_dir": "outputs",
}

# 值为任意字典、不做键检查的配置节
FREE_FORM_KEYS = {("initial_data", "params")}


def _merge(base: dict, override: dict, path: tuple = ()) -> dict:
    """把 override 逐键合并进 base 的深拷贝, 遇到未知键报错。"""
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = ".".join(path + (key,))
        if key not in base:
            raise ConfigError(f"错误: 配置中存在未知键 '{where}'")
        if isinstance(base[key], dict) and path + (key,) not in FREE_FORM_KEYS:
            if not isinstance(value, dict):
                raise ConfigError(f"错误: 配置键 '{where}' 应为对象, 得到 {type(value).__name__}")
            out[key] = _merge(base[key], value, path + (key,))
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str = None, overrides: dict = None) -> dict:
    """
    读取 JSON 配置文件并与 DEFAULT_CONFIG 合并。

    Args:
        path (str): 配置文件路径, None 表示只用默认配置。
        overrides (dict): 额外的覆盖项 (测试与扫描使用)。

    Returns:
        dict: 完整配置。
    """
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"错误: 配置文件 '{path}' 未找到")
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"错误: 配置文件 '{path}' 不是合法的 JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"错误: 配置文件 '{path}' 顶层必须是对象")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(
                f"错误: 配置文件 '{path}' 的 schema_version={version}, 当前程序要求 {SCHEMA_VERSION}"
            )
        cfg = _merge(cfg, data)
    if overrides:
        cfg = _merge(cfg, overrides)

    scenario = cfg["initial_data"]["scenario"]
    if scenario not in SCENARIO_CONFIGS:
        raise ConfigError(f"错误: 未知的初始数据场景 '{scenario}' (可选 {list(SCENARIO_CONFIGS)})")
    return cfg


def scenario_params(cfg: dict) -> dict:
    """场景默认参数与配置 initial_data.params 合并, 去掉 module_name。"""
    name = cfg["initial_data"]["scenario"]
    params = {k: v for k, v in SCENARIO_CONFIGS[name].items() if k != "module_name"}
    params.update(cfg["initial_data"]["params"])
    return params


def print_config(cfg: dict = None):
    """打印当前配置，美化输出"""
    cfg = cfg if cfg is not None else DEFAULT_CONFIG
    print(f"\n{'-'*60}")
    print(f"配置文件路径: {__file__}")
    print("\n当前加载的配置项:")

    max_key_len = max(len(k) for k in cfg) if cfg else 0
    for key, value in cfg.items():
        if isinstance(value, dict):
            print(f"  {key:<{max_key_len}} →")
            for k, v in value.items():
                if isinstance(v, dict):
                    print(f"    ├── {k}:")
                    for sk, sv in v.items():
                        print(f"    │   ├── {sk} = {sv}")
                elif isinstance(v, list):
                    print(f"    ├── {k} = {pformat(v, width=100, compact=True)}")
                else:
                    print(f"    ├── {k} = {v}")
            continue
        if isinstance(value, str) and ('/' in value or '\\' in value):
            print(f"  {key:<{max_key_len}} → ├─{value}")
        else:
            print(f"  {key:<{max_key_len}} → {value}")

    name = cfg.get("initial_data", {}).get("scenario", SELECTED_SCENARIO)
    print(f"  场景 {name} →")
    for k, v in SCENARIO_CONFIGS.get(name, {}).items():
        print(f"    │   ├── {k} = {v}")
    print('-'*60 + '\n')


# 直接运行时打印默认配置
if __name__ == '__main__':
    print_config()
