"""Bundled data sets."""

import numpy as np

# Twenty bivariate observations of the published case study, in row order.
CASE_STUDY = np.array(
    [
        [0.468, 0.966],
        [9.951, 2.679],
        [0.866, 0.897],
        [6.731, 2.249],
        [1.421, 0.956],
        [2.040, 1.141],
        [2.967, 1.707],
        [1.200, 1.008],
        [0.426, 1.065],
        [1.946, 1.162],
        [0.676, 0.918],
        [1.184, 1.336],
        [0.960, 0.933],
        [1.972, 1.077],
        [1.549, 1.041],
        [0.819, 0.899],
        [0.063, 0.710],
        [1.280, 1.118],
        [0.824, 0.894],
        [0.227, 0.837],
    ]
)
CASE_STUDY.setflags(write=False)

FIXTURES = {"paper-s4": CASE_STUDY}
