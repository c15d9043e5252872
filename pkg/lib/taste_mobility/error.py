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

from __future__ import absolute_import, division, print_function, \
    unicode_literals


class TasteMobilityError(Exception):
    # Process exit status used by the command line driver.
    exit_code = 1


class MissingInputError(TasteMobilityError):
    exit_code = 2


class ConfigError(TasteMobilityError):
    exit_code = 3


class DegenerateStatisticError(TasteMobilityError):
    exit_code = 4
