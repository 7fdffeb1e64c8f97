#!/usr/bin/env python3
# Copyright 2026 The MarkKit Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Generates the bundled toy resources under data/toy/.

Everything is derived from a fixed seed, so rerunning the script reproduces
the committed files byte for byte. The resources are synthetic: a handful of
real words with their real pinyin, padded out with generated words whose
characters are assigned syllables so that every word has at least one
homophone and at least one equal-length embedding neighbour.
"""

import argparse
import math
import os
import random

SEED = 20220612

SYLLABLES = (
    "a ai an ba bai ban bao bei ben bi bian bu cai can cao ce chang chao che chen cheng chi chu "
    "chuan da dai dan dao de deng di dian diao ding dong du duan dui duo er fa fan fang fei fen "
    "feng fu gai gan gao ge gong gu guan guo hai han hao he hei hen hong hou hu hua huan huang hui "
    "ji jia jian jiang jiao jie jin jing jiu ju jue kai kan ke kong kou ku kuai lai lan lao le li "
    "lian liang lin ling liu long lu luo ma mai man mao mei men mi mian min ming mo mu na nan nei "
    "neng ni nian niao nong nu pai pan pao pei peng pi pian ping po qi qian qiang qiao qie qin "
    "qing qiu qu quan ren ri rong ru shan shang shao she shen sheng shi shou shu shuang shui si su "
    "suan sui tai tan tang tao te ti tian tiao ting tong tou tu tuan wai wan wang wei wen wo wu xi "
    "xia xian xiang xiao xie xin xing xiong xiu xu xue ya yan yang yao ye yi yin ying yong you yu "
    "yuan yue yun zai zao ze zeng zhan zhang zhao zhe zhen zheng zhi zhong zhou zhu zhuan zi zong "
    "zou zu zui zuo"
).split()

# Real words with their real (tone-stripped) pinyin.
CORE = [
    ("地球", "di qiu", "NN"), ("地", "di", "NN"), ("球", "qiu", "NN"),
    ("天气", "tian qi", "NN"), ("天", "tian", "NN"), ("气", "qi", "NN"),
    ("很", "hen", "AD"), ("好", "hao", "VA"), ("附近", "fu jin", "NN"),
    ("富金", "fu jin", "NR"), ("北京", "bei jing", "NR"), ("背景", "bei jing", "NN"),
    ("在", "zai", "P"), ("再", "zai", "AD"), ("二月", "er yue", "NT"),
    ("今天", "jin tian", "NT"), ("我们", "wo men", "PN"), ("学习", "xue xi", "VV"),
    ("中国", "zhong guo", "NR"), ("人民", "ren min", "NN"), ("时间", "shi jian", "NN"),
    ("世间", "shi jian", "NN"), ("事件", "shi jian", "NN"), ("知道", "zhi dao", "VV"),
    ("指导", "zhi dao", "VV"), ("公式", "gong shi", "NN"), ("公示", "gong shi", "NN"),
    ("上海", "shang hai", "NR"), ("伤害", "shang hai", "NN"), ("经济", "jing ji", "NN"),
    ("经纪", "jing ji", "NN"), ("发展", "fa zhan", "VV"), ("语言", "yu yan", "NN"),
    ("预言", "yu yan", "NN"), ("模型", "mo xing", "NN"), ("医生", "yi sheng", "NN"),
    ("一生", "yi sheng", "NN"), ("城市", "cheng shi", "NN"), ("程式", "cheng shi", "NN"),
]

CHARS = (
    "的一是了不人我他有这个上们来到时大地为子中你说生国年着就那和要她出也得里后自以会家可下"
    "而过天去能对小多然于心学么之都好看起发当没成只如事把还用第样道想作种开美总从无情己面最女"
    "但现前些所同日手又行意动方期它头经长儿回位分爱老因很给名法间斯知世什两次使身者被高已亲其"
    "进此话常与活正感见明问力理尔点文几定本公特做外孩相西果走将月十实向声车全信重三机工物气每"
    "并别真打太新比才便夫再书部水像眼等体却加电主界门利海受听表德少克代员许先口由死安写性马"
    "光白或住难望教命花结乐色更拉东神记处让母父应直字场平报友关放至张认接告入笑内英军候民岁往"
    "何度山觉路带万男边风解叫任金快原吃妈变通师立象数四失满战远格士音轻目条呢病始达深完今提求"
    "清王化空业思切怎非找片罗钱吗语元喜曾离飞科言干流欢约各即指合反题必该论交终林请医晚制球"
    "决传画保读运及则房早院量苦火布品近坐产答星精视五连司巴奇管类未朋且婚台夜青北队久乎越观"
    "落尽形影红爸百令周吧识步希亚术留市半热送兴造谈容极随演收首根讲整式取照办强石古华拿计您"
    "装似足双妻尼转诉米称丽客南领节衣站黑刻统断福城故历惊脸选包紧争另建维绝树系伤示愿持千史谁"
    "准联妇纪基买志静阿诗独复痛消社算义竟确酒需单治卡幸兰念举仅钟怕共毛句息功官待究跟穿室易游"
    "程号居考突皮哪费倒价图具刚脑永歌响商礼细专黄块脚味灵改据般破引食仍存众注笔甚某沉血备习校"
    "默务土微娘须试怀料调广苏显赛查密议底列富梦错座参八除跑亮假印设线温虽掉京初养香停际致阳"
    "纸李纳验助激够严证帝饭忘趣支春集丈木研班普导顿睡展跳获艺六波察群皇段急庭创区奥器谢弟店否"
    "害草排背止组州朝封睛板角况曲馆育忙质河续哥呼若推境遇雨标姐充围案伦护冷警贝著雪索剧啊船险"
    "烟依斗值帮汉慢佛肯闻唱沙局伯族低玩资屋击速顾泪洲团圣旁堂兵七露园牛哭旅街劳型烈姑陈莫鱼异"
    "抱宝权鲁简态级票怪寻杀律胜份汽右洋范床舞秘午登楼贵吸责例追较职属渐左录丝牙党继托赶章智冲"
    "叶胡吉卖坚喝肉遗救修松临藏担戏善卫药悲敢靠伊村戴词森耳差短祖云规窗散迷油旧适乡架恩投弹铁"
    "博雷府压超负勒杂醒洗采毫嘴毕九冰既状乱景席珍童顶派素脱农疑练野按犯拍征坏骨余承置彩灯巨"
    "琴免环姆暗换技翻束增忍餐洛塞缺忆判欧层付阵玛批岛项狗休懂武革良恶恋委拥娜妙探呀营退摇弄桌"
    "熟诺宣银势奖宫忽套康供优课鸟喊降夏困刘罪亡鞋健模败伴守挥鲜财孤枪禁恐伙杰迹妹遍盖副坦牌"
    "江顺秋萨菜划授归浪听凡预奶雄升编典袋莱含盛济蒙棋端腿招释介烧误"
)
# Drop characters outside the common CJK block and deduplicate, preserving order.
_seen = set()
CHARS = [c for c in CHARS if "一" <= c <= "鿿" and not (c in _seen or _seen.add(c))]

POS_TAGS = ["NN", "VV", "AD", "JJ", "NR", "NT", "VA", "P", "PN"]
ENTITY_TYPES = ["LOC", "PER", "ORG"]


def build_lexicon(rng):
    char_syl = {}
    for word, py, _ in CORE:
        for c, s in zip(word, py.split()):
            char_syl.setdefault(c, s)
    chars = list(CHARS)
    for w, _, _ in CORE:
        for c in w:
            if c not in chars:
                chars.append(c)
    free = [c for c in chars if c not in char_syl]
    rng.shuffle(free)
    # A small syllable inventory keeps homophone groups populated.
    inventory = SYLLABLES[: max(40, len(chars) // 4)]
    for i, c in enumerate(free):
        char_syl[c] = inventory[i % len(inventory)]
    by_syl = {}
    for c in chars:
        by_syl.setdefault(char_syl[c], []).append(c)
    # Every character needs a same-syllable partner.
    lonely = [c for c in chars if len(by_syl[char_syl[c]]) < 2]
    for c in lonely:
        if len(by_syl[char_syl[c]]) >= 2:
            continue
        by_syl[char_syl[c]].remove(c)
        char_syl[c] = inventory[0]
        by_syl[inventory[0]].append(c)

    lexicon = {}  # word -> (pinyin, pos, freq)
    for word, py, pos in CORE:
        lexicon[word] = (py, pos, rng.randint(50, 5000))
    for c in chars:
        if c not in lexicon:
            lexicon[c] = (char_syl[c], rng.choice(POS_TAGS), rng.randint(1, 2000))

    def homophone(word):
        for _ in range(20):
            alt = "".join(rng.choice(by_syl[char_syl[c]]) for c in word)
            if alt != word:
                return alt
        return None

    targets = {2: 900, 3: 220, 4: 80}
    for length, count in targets.items():
        made = 0
        while made < count:
            w = "".join(rng.choice(chars) for _ in range(length))
            if w in lexicon:
                continue
            h = homophone(w)
            if h is None or h in lexicon:
                continue
            py = " ".join(char_syl[c] for c in w)
            pos = rng.choice(POS_TAGS)
            lexicon[w] = (py, pos, rng.randint(1, 1000))
            lexicon[h] = (py, rng.choice(POS_TAGS), rng.randint(1, 1000))
            made += 2
    return lexicon


def build_embeddings(rng, lexicon, dim=16, clusters=48):
    centers = [[rng.gauss(0, 1) for _ in range(dim)] for _ in range(clusters)]
    vectors = {}
    for w in sorted(lexicon):
        c = centers[rng.randrange(clusters)]
        v = [round(x + rng.gauss(0, 0.35), 5) for x in c]
        if all(x == 0 for x in v):
            v[0] = 1.0
        vectors[w] = v
    return vectors


def build_corpus(rng, lexicon, docs=1100):
    words = sorted(lexicon)
    weights = [1.0 / math.sqrt(1 + i) for i in range(len(words))]
    rng.shuffle(weights)
    lines = []
    for _ in range(docs):
        for _ in range(rng.randint(6, 14)):
            n = rng.randint(3, 10)
            lines.append(rng.choices(words, weights=weights, k=n))
        lines.append(None)
    return lines


def build_ner(rng, lexicon, sentences=60):
    words = sorted(lexicon)
    out = []
    for _ in range(sentences):
        sent = []
        for w in rng.choices(words, k=rng.randint(3, 8)):
            if rng.random() < 0.3:
                t = rng.choice(ENTITY_TYPES)
                if len(w) == 1:
                    tags = ["S-" + t]
                else:
                    tags = ["B-" + t] + ["M-" + t] * (len(w) - 2) + ["E-" + t]
            else:
                tags = ["O"] * len(w)
            sent.extend(zip(w, tags))
        out.append(sent)
    return out


def write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data", "toy"))
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)
    rng = random.Random(SEED)

    lexicon = build_lexicon(rng)
    ordered = sorted(lexicon)
    write(os.path.join(args.out, "lexicon.tsv"),
          "".join(f"{w}\t{lexicon[w][1]}\t{lexicon[w][2]}\n" for w in ordered))
    write(os.path.join(args.out, "pinyin.tsv"),
          "".join(f"{w}\t{lexicon[w][0]}\n" for w in ordered))

    emb = build_embeddings(rng, lexicon)
    dim = len(next(iter(emb.values())))
    write(os.path.join(args.out, "embeddings.txt"),
          f"{len(emb)} {dim}\n" + "".join(w + " " + " ".join(f"{x:.5f}" for x in v) + "\n"
                                          for w, v in emb.items()))

    corpus = build_corpus(rng, lexicon)
    write(os.path.join(args.out, "corpus.txt"),
          "".join(("".join(s) if s is not None else "") + "\n" for s in corpus))
    write(os.path.join(args.out, "corpus.seg.txt"),
          "".join((" ".join(f"{w}/{lexicon[w][1]}" for w in s) if s is not None else "") + "\n"
                  for s in corpus))

    chars = sorted({c for w in lexicon for c in w})
    specials = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[S]"]
    pos_markers = [f"[S-{p}]" for p in sorted({v[1] for v in lexicon.values()})]
    write(os.path.join(args.out, "vocab.txt"), "".join(t + "\n" for t in specials + pos_markers + chars))

    ner = build_ner(rng, lexicon)
    write(os.path.join(args.out, "ner.tsv"),
          "\n".join("".join(f"{c}\t{t}\n" for c, t in s) for s in ner))


if __name__ == "__main__":
    main()
