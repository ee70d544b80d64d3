"""The 'test' class for censbounds."""

from .test_cli import TestCombine, TestDispatch, TestEstimate, TestOracle, TestSimulate
from .test_config import TestConfigFiles
from .test_core import TestLinkFunctions, TestObservation, TestParameterBox
from .test_dataset import TestLoadDataset, TestSchemaFiles
from .test_instruments import TestBases, TestBuildFamily, TestNormalizers, TestProducts
from .test_inversion import (
    TestCache,
    TestEstimateInterval,
    TestGrids,
    TestIdentifiedSet,
    TestInitialSearch,
    TestRootFinders,
)
from .test_moments import TestAssumptions, TestMoments, TestMomentSystem, TestPeterson
from .test_oracle import TestAdaptiveGrid, TestMonteCarloMoments, TestOracleBounds
from .test_simulation import (
    TestCalibration,
    TestDataGeneration,
    TestDesignFiles,
    TestFrankCopula,
    TestRunDesign,
    TestSummaries,
)
from .test_subvector import TestBootstrapQuantile, TestSelection, TestSFunction, TestSubvectorTest
from .test_timecombine import TestCombineOverTimes, TestCombineSets, TestLevels, TestVote

__all__ = [
    'TestAdaptiveGrid',
    'TestAssumptions',
    'TestBases',
    'TestBootstrapQuantile',
    'TestBuildFamily',
    'TestCache',
    'TestCalibration',
    'TestCombine',
    'TestCombineOverTimes',
    'TestCombineSets',
    'TestConfigFiles',
    'TestDataGeneration',
    'TestDesignFiles',
    'TestDispatch',
    'TestEstimate',
    'TestEstimateInterval',
    'TestFrankCopula',
    'TestGrids',
    'TestIdentifiedSet',
    'TestInitialSearch',
    'TestLevels',
    'TestLinkFunctions',
    'TestLoadDataset',
    'TestMomentSystem',
    'TestMoments',
    'TestMonteCarloMoments',
    'TestNormalizers',
    'TestObservation',
    'TestOracle',
    'TestOracleBounds',
    'TestParameterBox',
    'TestPeterson',
    'TestProducts',
    'TestRootFinders',
    'TestRunDesign',
    'TestSFunction',
    'TestSchemaFiles',
    'TestSelection',
    'TestSimulate',
    'TestSubvectorTest',
    'TestSummaries',
    'TestVote',
    ]

# vim: sw=4 ts=4 et si:
