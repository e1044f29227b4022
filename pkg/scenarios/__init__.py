"""初始数据场景: 每个场景实现 InitialData.build。"""
