# aurora/solver/__init__.py
"""正则化可压缩 MHD 与三次 NLS 耦合格式的数值库。"""
