# Author: elexpress developers
# Disclaimer: This code is under the MIT license, whose details can be found at
# the root in the LICENSE file
#
# -*- coding: utf-8 -*-
""" Simulate speaker/listener signalling games and measure the expressivity
of the languages that emerge in them

Attributes
---------------------------------------------------------------------------
logger : (logger)
    Logger handle
max_space_size : (int)
    Largest input space that may be enumerated without raising the cap
prob_clamp : (float)
    Probability clamp applied to sigmoid outputs before taking logarithms
train_fraction : (float)
    Fraction of a recorded language used to train transfer listeners
PUBLISHED_TRANSFER_TABLE : (str)
    Filename, with directory, of the published transfer-matrix means and
    standard deviations
PUBLISHED_MESSAGE_TYPES : (str)
    Filename, with directory, of the published message-type statistics

"""
# Imports
#---------------------------------------------------------------------

import logging
import os as _os

from elexpress.meaning import (AttributeSpec, generate_input_space,
                               attribute_distance)
from elexpress.agents import (ChannelSpec, gumbel_softmax_sample,
                              speaker_forward, listener_encode_message)
from elexpress.games import (GameSpec, parse_game_id, contrastive_loss,
                             conventional_referential_loss,
                             reconstruction_loss)
from elexpress.trainer import (TrainRunConfig, train_game, record_language,
                               count_message_types)
from elexpress.transfer import (split_language, run_transfer_experiment)
from elexpress.analysis import (expressivity_partial_order,
                                full_order_report, paper_mutual_information,
                                entropy_mi_oracle)

# Define global variables
#---------------------------------------------------------------------

__version__ = "0.3.1"

# Define a logger object to allow easier log handling
logger = logging.getLogger('elexpress_logger')

# Enumeration guard, a 4 x 10 space is 10,000 meanings
max_space_size = 1000000

# Keeps log(0) out of the reconstruction loss
prob_clamp = 1.0e-7

# Train/test ratio for language transfer
train_fraction = 0.9

# Published reference tables shipped with the package
_DATA_DIR = _os.path.join(_os.path.realpath(_os.path.dirname(__file__)),
                          'published')
PUBLISHED_TRANSFER_TABLE = _os.path.join(_DATA_DIR, 'transfer_table.txt')
PUBLISHED_MESSAGE_TYPES = _os.path.join(_DATA_DIR, 'message_types.txt')
