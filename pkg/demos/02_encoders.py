"""The three observation encoders and what each one can see.

FIS keeps both character identities, QS keeps only its own, FQS keeps none.
All three share the same numeric attributes.
"""

import dataclasses

import numpy as np

from helt.encoders import CharacterTable, EncoderMode, encode, feature_dim
from helt.game import new_match
from helt.pool import generate_pool

pool = generate_pool(3, 0)
table = CharacterTable.from_ids([c.char_id for c in pool[:6]])
state = new_match(pool[0], pool[1], 1800, 3)
for mode in EncoderMode:
    obs = encode(state, 0, mode, table)
    print(f"{mode.value:4s} ids={obs.ids.tolist()} attrs={obs.attrs.size} "
          f"width={feature_dim(mode, table)}")

# relabel the opponent: only FIS notices
renamed = new_match(pool[0], dataclasses.replace(pool[1], char_id=pool[2].char_id), 1800, 3)
for mode in EncoderMode:
    a, b = encode(state, 0, mode, table), encode(renamed, 0, mode, table)
    same = np.array_equal(a.ids, b.ids) and np.array_equal(a.attrs, b.attrs)
    print(f"{mode.value:4s} unchanged after relabelling the opponent: {same}")

# a held-out character maps to the reserved unknown index 0
held_out = new_match(pool[0], pool[11], 1800, 3)
print("FIS ids vs a held-out opponent:", encode(held_out, 0, EncoderMode.FIS, table).ids.tolist())
