EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INVALID_CONFIG = 3
EXIT_CONTRACT_VIOLATION = 4
EXIT_NUMERICAL_FAILURE = 5
EXIT_IO_FAILURE = 6
EXIT_INTERNAL_ERROR = 7
