"""Paul Junction - 双层旋转反射 Paul 阱结的稳定性分析与离子飞行模拟"""

__version__ = "0.1.0"
