"""Setup file for installation.

We magically create front-ends for our scripts,
and we cleanup up after ourselves if setup is given
the 'clean' command.
"""

import os
import shutil

from setuptools import Command, setup


# our scripts -- we will create front ends for these
SCRIPT_MODULES = ['estimatebounds', 'combinebounds', 'simulatebounds', 'oraclebounds']

# command names for the script modules
SCRIPT_NAMES = {
    'estimatebounds': 'censbounds-estimate',
    'combinebounds': 'censbounds-combine',
    'simulatebounds': 'censbounds-simulate',
    'oraclebounds': 'censbounds-oracle',
    }


class CleanCommand(Command):
    """Clean up after a build"""

    description = 'Clean up after ourselves'
    user_options = []

    def initialize_options(self):
        self.cwd = None

    def finalize_options(self):
        self.cwd = os.getcwd()

    def run(self):
        if os.getcwd() != self.cwd:
            raise Exception(f'Must be in package root: {self.cwd}')
        print('Removing "build" subdirectory, and everything under it')
        shutil.rmtree('./build', ignore_errors=True)
        print('Removing egg-info files, if any')
        shutil.rmtree('./censbounds.egg-info', ignore_errors=True)


setup(
    cmdclass={'clean': CleanCommand},
    author='censbounds developers',
    name='censbounds',
    description='Confidence bounds for survival regression coefficients under unspecified censoring',
    packages=['censbounds'],
    python_requires='>=3.10',
    install_requires=['numpy>=1.24', 'scipy>=1.14', 'pandas>=1.5'],
    extras_require={'test': ['hypothesis>=6.0']},
    entry_points={
        'console_scripts': ['censbounds = censbounds.cli:main',
                            *[f'{SCRIPT_NAMES[m]} = censbounds.{m}:main' for m in SCRIPT_MODULES]],
        },
    version='1.0')

# vim: sw=4 ts=4 et si:
