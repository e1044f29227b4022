# aurora/solver/errors.py
"""
求解器与运行框架使用的异常类型。
所有异常都继承自 AuroraError，命令行按类别映射退出码。
"""


class AuroraError(Exception):
    """所有 aurora 异常的基类。"""


class CapacityError(AuroraError, ValueError):
    """请求的模态数超过网格容量。"""


class ShapeError(AuroraError, ValueError):
    """场的网格或形状不匹配。"""


class DomainError(AuroraError, ValueError):
    """插值点落在区域之外。"""


class ParameterError(AuroraError, ValueError):
    """物理或数值参数不合法。"""


class PreconditionError(AuroraError, ValueError):
    """输入不满足算子的前提条件 (例如出现负密度)。"""


class ResolutionError(AuroraError, ValueError):
    """网格分辨率不足以执行该操作。"""


class PlanError(AuroraError, ValueError):
    """扫描计划违反单调性约束。"""


class ConfigError(AuroraError, ValueError):
    """配置文件无法解析, 或包含未知键 / 错误的版本号。"""


class NumericalError(AuroraError):
    """数值计算失败 (出现 NaN/Inf 或线性求解失败)。"""


class StepSizeError(NumericalError):
    """时间步长违反 CFL 条件。"""


class GeometryError(NumericalError):
    """粒子轨迹离开区域。"""


class SingularMassError(NumericalError):
    """质量矩阵 M[rho] 奇异 (inf rho <= 0)。"""


class HorizonError(AuroraError):
    """积分时间超过能量估计的有效时间 T^N。"""


class SnapshotError(AuroraError):
    """快照文件损坏或格式不符。"""
