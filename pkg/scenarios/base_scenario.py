# aurora/scenarios/base_scenario.py

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from solver.fields import ComplexField, ScalarField, VectorField3
from solver.geometry import Domain


@dataclass
class InitialFields:
    """未经正则化的初始数据 (rho0, m0, H0, psi0)。"""
    rho0: ScalarField
    m0: VectorField3
    H0: VectorField3
    psi0: ComplexField


class InitialData(ABC):
    """
    初始数据场景的抽象基类。
    所有具体场景都应继承此类并实现 build 方法。
    """

    def __init__(self, **params):
        """
        保存场景参数。

        Args:
            **params: 来自配置 initial_data.params 的场景参数, 未识别的键会被忽略。
        """
        self.params = params

    @abstractmethod
    def build(self, domain: Domain, rng: np.random.Generator) -> InitialFields:
        """
        在给定网格上构造初始数据。

        Args:
            domain (Domain): 计算区域。
            rng (np.random.Generator): 由配置 seed 初始化的随机数发生器。

        Returns:
            InitialFields: 初始密度、动量、磁场与波函数。
        """
        pass
