#!/usr/bin/env python3
"""Convert raw MovieLens-100K (u.data, u.user, u.item) into files hire_cli prepare reads.

Writes ratings.csv, users.csv (age, gender), items.csv (release year),
user_hierarchy.csv (user -> occupation -> sector) and item_hierarchy.csv
(item -> genre -> genre group). The occupation sectors and genre groups are
our own grouping; the raw data has no hierarchy. Items with several genres get
one parent per genre. Output matches tests/movielens.hpp byte for byte.
"""
import argparse
import os
import sys

OCCUPATION_SECTOR = {
    "doctor": "technical", "engineer": "technical", "healthcare": "technical", "lawyer": "technical",
    "programmer": "technical", "scientist": "technical", "technician": "technical",
    "administrator": "business", "executive": "business", "marketing": "business", "salesman": "business",
    "artist": "creative", "entertainment": "creative", "writer": "creative",
    "educator": "education", "librarian": "education", "student": "education",
    "homemaker": "other", "none": "other", "other": "other", "retired": "other",
}

GENRES = ["unknown", "Action", "Adventure", "Animation", "Children's", "Comedy", "Crime", "Documentary", "Drama",
          "Fantasy", "Film-Noir", "Horror", "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western"]

GENRE_GROUP = {
    "unknown": "unknown",
    "Action": "action", "Adventure": "action", "Crime": "action", "Thriller": "action", "War": "action",
    "Western": "action",
    "Animation": "light", "Children's": "light", "Comedy": "light", "Musical": "light", "Romance": "light",
    "Fantasy": "dark", "Film-Noir": "dark", "Horror": "dark", "Mystery": "dark", "Sci-Fi": "dark",
    "Documentary": "serious", "Drama": "serious",
}


def lines(path):
    with open(path, encoding="latin-1", newline="") as f:
        for line in f:
            line = line.rstrip("\n").rstrip("\r")
            if line:
                yield line


def convert(raw, out):
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "ratings.csv"), "w", newline="\n") as f:
        f.write("user,item,rating\n")
        for line in lines(os.path.join(raw, "u.data")):
            u, i, r = line.split("\t")[:3]
            f.write(f"{u},{i},{r}\n")

    used = {}
    with open(os.path.join(out, "users.csv"), "w", newline="\n") as feat, \
            open(os.path.join(out, "user_hierarchy.csv"), "w", newline="\n") as hier:
        feat.write("id,age,gender\n")
        hier.write("layer,child,parent\n")
        for line in lines(os.path.join(raw, "u.user")):
            uid, age, gender, occ = line.split("|")[:4]
            if occ not in OCCUPATION_SECTOR:
                raise SystemExit(f"u.user: unknown occupation '{occ}'")
            feat.write(f"{uid},{age},{gender}\n")
            hier.write(f"0,{uid},occ:{occ}\n")
            used[occ] = OCCUPATION_SECTOR[occ]
        for occ in sorted(used):
            hier.write(f"1,occ:{occ},sector:{used[occ]}\n")

    used = {}
    with open(os.path.join(out, "items.csv"), "w", newline="\n") as feat, \
            open(os.path.join(out, "item_hierarchy.csv"), "w", newline="\n") as hier:
        feat.write("id,year\n")
        hier.write("layer,child,parent\n")
        for line in lines(os.path.join(raw, "u.item")):
            f = line.split("|")
            date = f[2]
            feat.write(f"{f[0]},{date[-4:] if len(date) >= 4 else ''}\n")
            flags = f[5:5 + len(GENRES)]
            mine = [g for g, flag in zip(GENRES, flags) if flag == "1"] or ["unknown"]
            for g in mine:
                hier.write(f"0,{f[0]},genre:{g}\n")
                used[g] = GENRE_GROUP[g]
        for g in sorted(used):
            hier.write(f"1,genre:{g},group:{used[g]}\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("raw", help="directory with u.data, u.user, u.item")
    ap.add_argument("out", help="output directory")
    a = ap.parse_args()
    for name in ("u.data", "u.user", "u.item"):
        if not os.path.exists(os.path.join(a.raw, name)):
            sys.exit(f"missing {name} in {a.raw}")
    convert(a.raw, a.out)
    print(f"wrote {a.out}")


if __name__ == "__main__":
    main()
