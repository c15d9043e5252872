# Copyright (C) 2026 The taste_mobility developers
# All Rights Reserved.
#
# This program is free software; you can redistribute it and/or modify it under
# the terms of the GNU General Public License as published by the Free Software
# Foundation; either version 2 of the License, or (at your option) any later
# version.
#
# This program is distributed in the hope that it will be useful,but WITHOUT
# ANY WARRANTY; without even the implied warranty of MERCHANTABILITY or FITNESS
# FOR A PARTICULAR PURPOSE. See the GNU General Public License for more
# details.
#
# You should have received a copy of the GNU General Public License along with
# this program; if not, write to the Free Software Foundation, Inc.,51 Franklin
# Street, Fifth Floor, Boston, MA  02110-1301, USA

from setuptools import setup
import sys

sys.path.insert(0, 'lib')
from taste_mobility.version import version

with open('README.rst') as f:
    long_description = f.read()

setup(
    name='taste_mobility',
    version=version,
    description='Musical taste and relocation analysis pipeline',
    long_description=long_description,
    package_dir={'': 'lib'},
    packages=['taste_mobility'],
    package_data={'taste_mobility': [
        'data/default_config.json',
        'data/us_state_adjacency.txt',
    ]},
    scripts=['scripts/taste-mobility'],
    python_requires='>=3.7',
    install_requires=[
        'numpy>=1.17',
        'scipy>=1.3',
        'scikit-learn>=1.1',
        'pandas>=1.5',
        'docopt',
    ])
