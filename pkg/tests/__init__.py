# satsec test suite
